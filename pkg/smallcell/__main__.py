from smallcell.main import main

raise SystemExit(main())
