#!/usr/bin/env python3

from setuptools import setup, find_packages

setup(name="stealthkey",
      version="0.1.0",
      description="Bounds, degradedness checks and codebook simulation for "
                  "stealthy secret key generation.",
      author="The stealthkey developers",
      packages=find_packages(exclude=["build", "contrib", "doc", "tests*"]),
      python_requires=">=3.9",
      install_requires=["numpy>=1.20", "scipy>=1.7"],
      entry_points={
          "console_scripts": ["stealthkey=stealthkey.cli:main"],
      },
      classifiers=[
          "Development Status :: 3 - Alpha",
          "Intended Audience :: Science/Research",
          "Topic :: Scientific/Engineering :: Information Analysis",
          "Topic :: Security :: Cryptography",
          "Programming Language :: Python :: 3 :: Only",
          "Programming Language :: Python :: 3.9",
          "Programming Language :: Python :: 3.10",
          "Programming Language :: Python :: 3.11",
          "Programming Language :: Python :: 3.12",
          "Operating System :: OS Independent",
          "License :: DFSG approved",
      ])
