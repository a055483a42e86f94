from d2d_assign.main import main

main()
