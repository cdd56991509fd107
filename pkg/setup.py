import setuptools

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setuptools.setup(
    name="mstdp",
    version="0.1.0",
    author="the mstdp developers",
    description="Energy-based network trained with momentum STDP, classifies and generates MNIST digits",
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GPLv3",
        "Operating System :: OS Independent",
    ],
    package_dir={"": "src"},
    packages=setuptools.find_packages(where="src"),
    data_files=[
        ('etc', ['cfg/mstdp.conf', 'cfg/desk.conf']),
    ],
    entry_points = {
        "console_scripts": [
            "mstdp = mstdp.cli:main"
        ]
    },
    python_requires=">=3.9",
    install_requires=[
        "numpy",
        "scipy",
        "tinydb",
        "pandas",
        "ConfigArgParse",
    ],
)
