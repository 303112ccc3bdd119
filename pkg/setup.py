from setuptools import setup, find_packages

with open("requirements.txt") as f:
    required = [line for line in f.read().splitlines() if line and not line.startswith("#")]


setup(
    name="subscode",
    version="0.1.0",
    description="Word embeddings from n-gram substitute distributions on the unit sphere",
    license="MIT",
    packages=find_packages(exclude=["tests", "tests.*"]),
    include_package_data=True,
    install_requires=required,
    python_requires=">=3.9",
    entry_points={"console_scripts": ["subscode=subscode.cli:main"]},
)
