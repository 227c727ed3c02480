"""
ospqtm setup.py - Legacy setup for compatibility
"""
from setuptools import setup, find_packages

setup(
    name="ospqtm",
    version="1.0.0",
    description="ospqtm - quantum transfer matrix thermodynamics of the integrable osp(1|2) spin chain",
    long_description=open("README.md", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    author="ospqtm developers",
    packages=find_packages(include=["ospqtm", "ospqtm.*"]),
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.21.0",
        "scipy>=1.8.0",
        "tomli>=1.1.0; python_version<'3.11'",
    ],
    entry_points={
        "console_scripts": [
            "ospqtm=ospqtm.cli:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Physics",
    ],
)
