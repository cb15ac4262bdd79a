# Visualization module
