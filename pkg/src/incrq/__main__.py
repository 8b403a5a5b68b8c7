from incrq.workbench.cli import main

raise SystemExit(main())
