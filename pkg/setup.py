from setuptools import find_packages, setup

with open("README.md", "r") as readme:
    long_description = readme.read()

setup(
    name="isopatch",
    version="0.1.0",
    description="Isogeometric analysis on a single NURBS patch: arbitrary degree and continuity B-spline bases, parallel residual and Jacobian assembly, GMRES with block Jacobi ILU(0), Newton and generalized-alpha time stepping.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    include_package_data=True,
    package_data={"isopatch": ["docs/*.md"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    license="GPLv3",
    keywords=[
        "isogeometric analysis",
        "IGA",
        "NURBS",
        "B-spline",
        "finite elements",
        "GMRES",
        "ILU",
        "generalized-alpha",
        "Cahn-Hilliard",
        "hyperelasticity",
    ],
    entry_points={
        "console_scripts": [
            "iga=isopatch.__main__:cli_launcher",
        ],
    },
    python_requires=">=3.10",
    install_requires=[
        "fire>=0.6.0",
        "joblib>=1.4.2",
        "tqdm>=4.66.4",
        "rich>=13.8.1",
        "beartype >= 0.19.0",
        "platformdirs >= 4.2.2",
        "pyfiglet >= 1.0.2",  # banner
        "rtoml >= 0.11.0",
        "loguru >= 0.7.2",
        "numpy >= 1.26.0",
        "scipy >= 1.13.1",  # sparse matrices, triangular solves, matrix market
        "pydantic >= 2.7.0",  # patch file validation
    ],
    extras_require={
        "dev": [
            "black >= 25.1.0",
            "pre-commit >= 4.1.0",
            "pytest >= 8.3.4",
            "build",
            "twine",
        ],
    },
)
