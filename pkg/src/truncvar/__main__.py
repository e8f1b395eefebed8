from truncvar.cli import main

main()
