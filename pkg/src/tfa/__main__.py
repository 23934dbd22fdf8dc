from tfa.cli import main

raise SystemExit(main())
