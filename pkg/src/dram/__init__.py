# LISA DRAM Simulator - DRAM Package
