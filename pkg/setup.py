import os
from pathlib import Path

from setuptools import find_packages, setup

long_description = """
`lifecycle` derives weekly lifecycle series of products from their review
streams, groups products by lifecycle shape, forecasts sales densities with
a growth model driven by review signals, and analyzes how a leading product
fares once a competitor enters its market.
"""


def _get_version_suffix():
    import subprocess

    commit = subprocess.check_output(["git", "rev-parse", "HEAD"])
    print(f"Git commit: {commit}")
    return f".dev1+git.{commit.decode()[:16]}"


suffix = ''
if os.environ.get('LIFECYCLE_APPEND_VERSION_SUFFIX'):
    suffix = _get_version_suffix()

setup(
    name='product-lifecycle',
    python_requires='>=3.9.0',
    description='Product lifecycle analytics over review streams',
    version='0.1.0' + suffix,
    license='Apache-2.0',
    packages=find_packages(exclude=['lifecycle.tests']),
    install_requires=Path('requirements.txt').read_text().strip().split(),
    entry_points={
        'console_scripts': ['lifecycle = lifecycle.cli:main'],
    },
    long_description=long_description,
    long_description_content_type='text/markdown',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'License :: OSI Approved :: Apache Software License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Topic :: Scientific/Engineering :: Information Analysis',
    ],
)
