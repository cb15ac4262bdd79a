# Data preparation module
