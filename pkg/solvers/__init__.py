# Finite-volume solvers package
