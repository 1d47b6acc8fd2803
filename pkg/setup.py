from setuptools import setup, find_packages
from pathlib import Path

here = Path(__file__).resolve().parent
long_description = (here / "README.md").read_text(encoding="utf-8")
requirements = (here / "requirements.txt").read_text(encoding="utf-8").splitlines()
requirements_tests = (here / "requirements-tests.txt").read_text(encoding="utf-8").splitlines()

setup(
    name="lorasb",
    version="0.1.0",
    description="LoRA-SB adapters on desk-scale networks: update-approximation initialization, the optimal gradient correction for the trainable core, and executable property checks for every claim they rest on.",
    packages=find_packages(include=["lorasb", "lorasb.*"]),
    long_description=long_description,
    long_description_content_type="text/markdown",
    install_requires=requirements,
    include_package_data=True,
    package_data={"lorasb.adapters": ["layouts/*.layout"]},
    extras_require={
        "tests": requirements_tests
    },
    entry_points={
        "console_scripts": [
            "lorasb=lorasb.cli:main"
        ]
    },
    classifiers=[
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3.13",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: OS Independent",
    ],
)
