# LISA DRAM Simulator - Source Package
