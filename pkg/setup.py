from setuptools import setup, find_packages

setup(
    name='dualband_memory',
    version='0.1.0',
    packages=find_packages(exclude=['tests']),
    install_requires=[
        'numpy>=1.22',
        'scipy>=1.10',
        'matplotlib>=3.5',
    ],
    extras_require={
        'test': ['pytest>=7', 'hypothesis>=6'],
    },
    entry_points={
        'console_scripts': ['dualband-memory=dualband_memory.cli:main'],
    },
    python_requires='>=3.9',
    description='Dual-wavelength dark-state-polariton quantum memory simulator',
    license='MIT'
)
