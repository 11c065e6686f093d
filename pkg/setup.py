#!/usr/bin/env python
"""Setup script for exitduel."""

from setuptools import setup


if __name__ == '__main__':
    setup(
        name='exitduel',
        version='0.1.0',
        description='Equilibrium construction and verification for a stochastic exit duel',
        author='Eduard Bopp',
        author_email='eduard.bopp@aepsil0n.de',
        packages=['exitduel', 'exitduel.tests'],
        python_requires='>=3.6',
        install_requires=['numpy>=1.17', 'scipy>=1.6'],
        extras_require={'test': ['pytest>=3.9']},
        entry_points={'console_scripts': ['exitduel = exitduel.cli:main']},
    )
