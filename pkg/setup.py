#!/usr/bin/env python
####
# epvs_fusion Python Package:
#
# Segmentation of enlarged perivascular spaces (ePVS) from fused multi-sequence MRI. The package
# provides NIfTI volume IO, SWI construction, a 2D U-Net with training and inference, lesion
# extraction and matching, the evaluation metrics, a seeded phantom generator and the
# cross-validation harness that compares sequence combinations.
#
# Endpoints:
# - epvs-fusion: phantom generation, training, prediction, evaluation and ablation commands
#
# Optional Features:
# - Plot rendering: PNG renderings of the plot data. plots
#
# User Install / Upgrade:
# ```
# pip install --upgrade epvs-fusion
# ```
#
# Developer and Dynamic Installation:
# ```
# pip install -e .
# ```
###

from setuptools import find_packages, setup

# Setup a python package using setup-tools. This is a newer (and more recommended) technology
# than distutils.
setup(
    ####
    # Package Description:
    #
    # Basic package information. Describes the package and the data contained inside.
    ####
    name="epvs-fusion",
    use_scm_version={"root": ".", "relative_to": __file__},
    license="Apache 2.0 License",
    description="ePVS segmentation from fused multi-sequence MRI.",
    long_description="""
This package contains the Python files used to segment enlarged perivascular spaces from co-registered
T1w, T2w, FLAIR and SWI volumes, to evaluate the segmentations lesion by lesion and to compare sequence
combinations by cross-validation on real or phantom cohorts.
    """,
    keywords=["mri", "perivascular spaces", "segmentation", "u-net"],
    ####
    # Included Packages:
    #
    # Will search for and included all python packages under the "src" directory.  The root package
    # is set to 'src' to avoid package names of the form src.epvs_fusion.
    ####
    packages=find_packages("src"),
    package_dir={"": "src"},
    include_package_data=True,
    zip_safe=False,
    ####
    # Entry Points:
    #
    # Defines the list of entry-level (scripts) that are defined by this package.
    ####
    entry_points={
        "console_scripts": ["epvs-fusion = epvs_fusion.executables.epvs_cli:main"],
    },
    ####
    # Classifiers:
    #
    # Standard Python classifiers used to describe this package.
    ####
    classifiers=[
        # complete classifier list: http://pypi.python.org/pypi?%3Aaction=list_classifiers
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Medical Science Apps.",
        "Operating System :: Unix",
        "Operating System :: POSIX",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: Implementation :: CPython",
    ],
    python_requires=">=3.8",
    setup_requires=["setuptools_scm"],
    install_requires=[
        "numpy>=1.21",
        "scipy>=1.7",
        "nibabel>=3.2",
        "argcomplete>=1.12.3",
        "openpyxl>=3.0.10",
        "pytest>=6.2.4",
    ],
    extras_require={
        # PNG renderings of the plot data
        "plots": "matplotlib>=3.4",
    },
)
