"""Values, bags, monoids and merge forms."""

from incrq.core.monoids import (
    AND,
    BAG_DIFF,
    BOX,
    DIFF,
    EXACT_KEYS,
    OR,
    PROD,
    SUM,
    UNION,
    And,
    ApproxKeys,
    BagDiff,
    Box,
    Diff,
    DownLeft,
    DownRight,
    KeyMatcher,
    Lifted,
    MergeForm,
    Monoid,
    Or,
    Prod,
    Product,
    ProductForm,
    Sum,
    Union,
    diffusion,
    diminisher,
    merge,
    merge_down_left,
    merge_down_right,
    monoid_merge,
    monoid_zero,
    reduce_values,
)
from incrq.core.values import (
    EMPTY_BAG,
    UNIT,
    Bag,
    bag_equals,
    bag_of,
    canonical_items,
    canonical_key,
    to_text,
)

__all__ = [
    "AND", "BAG_DIFF", "BOX", "DIFF", "EXACT_KEYS", "OR", "PROD", "SUM", "UNION",
    "And", "ApproxKeys", "BagDiff", "Box", "Diff", "DownLeft", "DownRight",
    "KeyMatcher", "Lifted", "MergeForm", "Monoid", "Or", "Prod", "Product",
    "ProductForm", "Sum", "Union", "diffusion", "diminisher", "merge",
    "merge_down_left", "merge_down_right", "monoid_merge", "monoid_zero",
    "reduce_values", "EMPTY_BAG", "UNIT", "Bag", "bag_equals", "bag_of",
    "canonical_items", "canonical_key", "to_text",
]
