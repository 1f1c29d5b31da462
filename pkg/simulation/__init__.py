# Coupled simulation package
