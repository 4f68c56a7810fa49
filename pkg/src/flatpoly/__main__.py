from flatpoly.cli import main

main()
