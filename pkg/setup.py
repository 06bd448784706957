#!/usr/bin/env python3
"""
Setup Script for kinspike
Installs the package and the `kinspike` command.
"""

from pathlib import Path

from setuptools import find_packages, setup

ROOT = Path(__file__).parent


def read_requirements():
    """Runtime requirements, without the test tooling."""
    lines = (ROOT / "requirements.txt").read_text().splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith("#") and "pytest" not in line]


setup(
    name="kinspike",
    version="1.0.0",
    description="Sparse event encoding, classification and spiking conversion of kinematic logs",
    long_description=(ROOT / "README.md").read_text(),
    long_description_content_type="text/markdown",
    packages=find_packages(include=["kinspike", "kinspike.*"]),
    python_requires=">=3.9",
    install_requires=read_requirements(),
    extras_require={"test": ["pytest>=7.4.0"]},
    entry_points={"console_scripts": ["kinspike=kinspike.orchestration.cli:main"]},
)
