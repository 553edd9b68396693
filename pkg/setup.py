# -*- coding: utf-8 -*-

import re
import os

##### Setup
from setuptools import setup

def readme():
    """
    create logdescription from rst file
    """
    with open('README.rst') as f:
        return f.read()

def version():
    """
    read __version__ from the package without importing it
    """
    with open(os.path.join('msde', '__init__.py')) as f:
        return re.search(r"^__version__ = ['\"]([^'\"]+)['\"]", f.read(), re.M).group(1)

release = version()

setup(
    name='msde',
    version=release,
    description='minimum S-divergence estimation of discrete parametric models with robustness and efficiency diagnostics',
    long_description=readme(),
    classifiers=[
        'Development Status :: 4 - Beta',
        'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
        'Programming Language :: Python :: 3.7',
        'Programming Language :: Python :: 3.8',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Operating System :: POSIX :: Linux',
        'Operating System :: MacOS :: MacOS X',
    ],
    keywords='robust statistics divergence estimation poisson geometric',
    packages=['msde'],
    scripts=[],
    entry_points={
        'console_scripts': ['msde=msde.main:main'],
    },
    include_package_data=True,
    package_data={'msde': ['data/*.csv']},
    install_requires=[
        "numpy>=1.17",
        "scipy>=1.4",
        "tqdm>=4.32"
    ],
    extras_require={
        'test': ["pytest>=5", "hypothesis>=5"],
        'doc': ["sphinx"],
    },
    zip_safe=False
)
