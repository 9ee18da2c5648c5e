from mimetic.cli import main

raise SystemExit(main())
