from setuptools import setup, find_packages


with open('README.rst') as readme_file:
    readme = readme_file.read()


requirements = [
    'numpy>=1.20',
    # fftconvolve(axes=...) and ndimage filters
    'scipy>=1.4',
    'Pillow>=9.1',
    # 16-bit greyscale PNG depth maps
    'pypng>=0.20220715.0',

    'coloredlogs',
    'colorama',
    'tabulate',
    'sqlalchemy>=1.4',
    'tqdm',
    'configobj',
    # ParameterSource and default_map handling
    'click>=8.0',
    'arrow',
]

test_requirements = [
    'pytest',
    # Independent SSIM implementation the loss and metric tests compare against
    'scikit-image>=0.19',
]

dev_requirements = [
    "bumpversion>=0.5.3,<1",
    "wheel",
    "sphinx",
    "sphinx_rtd_theme",
    "setuptools",
]

setup(
    name='uwsim',
    version='0.1.0',
    description="Underwater image synthesis, restoration and quality assessment",
    long_description=readme + '\n\n',
    packages=find_packages(exclude=['docs', 'tests', 'venv', 'venv2', '.*']),
    install_requires=requirements,
    license="Apache 2.0",
    zip_safe=False,
    keywords='underwater image restoration dehazing uiqm ssim rgb-d dataset',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Image Processing',
    ],
    python_requires='>=3.8',
    test_suite='tests',
    extras_require={
        "test": test_requirements,
        "dev": dev_requirements,
    },
    entry_points='''
    [console_scripts]
    uwsim=uwsim.cli.main:main
    ''',
)
