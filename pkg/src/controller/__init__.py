# LISA DRAM Simulator - Memory Controller Package
