# LISA DRAM Simulator - CPU Front-End Package
