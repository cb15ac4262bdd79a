# Coarse video engine: hybrid warping, world cache and autoregressive scheduling
