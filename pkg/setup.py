import io
from setuptools import find_packages, setup
from django_maxrigid import __version__

setup(
    name='django-maxrigid',
    version=__version__,
    description='Rigidity-maximizing 3D reconstruction of tracked points as Django management commands',
    long_description=io.open('README.rst', encoding='utf-8').read(),
    packages=find_packages(exclude=('test_project', 'tests')),
    include_package_data=True,
    python_requires='>=3.8',
    install_requires=['Django>=3.2', 'numpy>=1.20', 'scipy>=1.7'],
    entry_points={
        'console_scripts': ['maxrigid = django_maxrigid.cli:main'],
    },
    classifiers=[
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Development Status :: 4 - Beta',
        'Framework :: Django',
        'Framework :: Django :: 3.2',
        'Framework :: Django :: 4.2',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Topic :: Scientific/Engineering :: Image Recognition',
    ]
)
