from setuptools import setup, find_packages

setup(
    name="thermo_run",
    version="0.1.0",
    packages=find_packages(exclude=['tests', 'tests.*']),
    install_requires=[
        "numpy",
        "scipy",
        "networkx>=3.1",  # simple_cycles(length_bound=...)
        "joblib",
        "pyyaml",
    ],
    extras_require={
        'test': [
            'pytest',
            'pytest-cov',
            'pytest-mock',
        ],
    },
    entry_points={
        'console_scripts': [
            'thermo_run=thermo_run.cli.runner:main',
        ],
    },
    author="thermo_run developers",
    description="Pressure, equilibrium states, level-set spectra and carpet dimensions for shifts of finite type",
    keywords="thermodynamic formalism, pressure, equilibrium states, multifractal analysis, self-affine carpets",
    url="",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
)
