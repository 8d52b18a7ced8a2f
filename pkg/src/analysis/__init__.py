# LISA DRAM Simulator - Analysis Package
