"""
tanglegame
Tangle simulation and the default/greedy attachment game
"""
import sys
from setuptools import setup, find_packages

short_description = __doc__.split("\n")

# from https://github.com/pytest-dev/pytest-runner#conditional-requirement
needs_pytest = {'pytest', 'test', 'ptr'}.intersection(sys.argv)
pytest_runner = ['pytest-runner'] if needs_pytest else []

try:
    with open("README.md", "r") as handle:
        long_description = handle.read()
except OSError:
    long_description = "\n".join(short_description[2:])

version = {}
with open("tanglegame/_version.py") as handle:
    exec(handle.read(), version)


setup(
    name='tanglegame',
    description=short_description[1],
    long_description=long_description,
    long_description_content_type="text/markdown",
    version=version["__version__"],
    license='LGPLv3',

    packages=find_packages(),

    # Ships the configuration files under tanglegame/data
    include_package_data=True,
    package_data={'tanglegame': ['data/*.cfg']},

    # Allows `setup.py test` to work correctly with pytest
    setup_requires=[] + pytest_runner,

    install_requires=['numpy', 'scipy', 'pandas'],
    python_requires=">=3.7",
    entry_points={'console_scripts': ['tanglegame=tanglegame.tanglegame:main']},
)
