from setuptools import setup, find_packages

setup(
    name="coarse-video-engine",
    version="1.0.0",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "numpy>=1.24.0",
        "pandas>=1.3.0",
        "tqdm>=4.60.0",
        "plotly>=5.0.0",
        "python-dotenv>=1.0.0",
        "rich>=13.0.0",
        "opencv-python-headless>=4.8.0",
        "plyfile>=1.0.0",
    ],
    extras_require={
        "test": ["pytest>=7.0.0", "scipy>=1.11.0"],
    },
    entry_points={
        "console_scripts": [
            "coarse-video=src.cli:main",
        ],
    },
)
