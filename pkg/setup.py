from setuptools import setup

with open("greyhull/__init__.py", encoding="utf-8") as f:
    for line in f:
        if (line.startswith("__version__")):
            VERSION = line.strip().split()[-1][1:-1]
            break

setup(name="greyhull",
      version=VERSION,
      description="Grey-box identification of ship maneuvering models from trajectory data.",
      license="GPLv2",
      packages=["greyhull"],
      install_requires=[
            "numpy",
            "pandas",
            "scipy",
            "pyyaml",
      ],
      extras_require={
            "test": ["pytest"],
      },
      entry_points={
            "console_scripts": ["greyhull=greyhull.cli:main"],
      },
      python_requires=">=3.9",
      )
