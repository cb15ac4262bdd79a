# World cache module
