from ipflab.cli import main

main()
