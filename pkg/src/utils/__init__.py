# LISA DRAM Simulator - Utils Package
