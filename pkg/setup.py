from setuptools import setup, find_packages


setup(name='ParsReduce',
        version='1.0.0',
        description='Parameter and state reduction of parameter-dependent linear systems with SOS-certified H-infinity error bounds.',
        long_description="See README.md for more details.",
        python_requires='>=3.9',
        license='Apache 2.0',
        packages=find_packages(exclude=["tests", "tests.*"]),
        install_requires=[
            'numpy',
            'scipy>=1.7',
            'cvxpy>=1.3',
            'pandas',
            'psutil',
            'tqdm>=4.45.0',
            'p_tqdm',
        ],
        extras_require={
            'test': ['pytest'],
        },
        zip_safe=False,
        classifiers=[
            'Intended Audience :: Science/Research',
            'Programming Language :: Python',
            'Topic :: Scientific/Engineering',
            'Operating System :: Unix',
            'Operating System :: MacOS'
        ],
        entry_points={
            'console_scripts': [
                'ParsReduce=parsreduce.bin.ParsReduce:main',
                'parsreduce_set_backend=parsreduce.bin.parsreduce_set_backend:main'
            ],
        },
    )
