import setuptools

with open("README.md", "r") as f:
    readme = f.read()

setuptools.setup(
    name="chessproblems",
    version="0.1.0",
    description=(
        "Compose, solve and check directmate chess problems with exact "
        "verification."
    ),
    long_description=readme,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages("src"),
    package_dir={"": "src"},
    license="MIT",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Games/Entertainment :: Board Games",
    ],
    keywords=["chess", "chess problems", "mate solver", "composition"],
    install_requires=[
        "numpy>=1.17",
        "scipy>=1.0.0",
        "chess>=1.9",
        "Pillow>=9.2",
    ],
    extras_require={
        "tests": ["pytest", "pytest-randomly", "coverage"],
        "demo": ["matplotlib", "seaborn"],
        "doc": ["sphinx", "sphinx_rtd_theme", "recommonmark"],
    },
    entry_points={
        "console_scripts": ["chessproblems = chessproblems.cli:main"]
    },
    python_requires=">=3.8",
)
