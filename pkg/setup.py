# -*- coding: utf-8 -*-
from setuptools import setup

setup(name = "python-mimetic",
      version = "0.1",
      description = "Mimetic spectral element solver for the Stokes problem",
      long_description = open("README").read(),
      packages = ["mimetic"],
      platforms = ["linux"],
      python_requires = ">=3.8",
      install_requires = ["numpy", "scipy", "sympy"],
      extras_require = {"test": ["pytest"]},
      entry_points = {"console_scripts": ["mimetic = mimetic.cli:main"]}
)
