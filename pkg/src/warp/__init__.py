# Warp module
