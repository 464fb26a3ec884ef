from .adapter import main

raise SystemExit(main())
