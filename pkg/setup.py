import os
from setuptools import setup, find_packages

setup(
    name='prgf-attack',
    version='1.0.0',
    description='Prior-guided random gradient-free estimation and black-box attacks',
    long_description=open('README.md').read() if os.path.exists('README.md') else '',
    long_description_content_type='text/markdown',
    keywords='zeroth-order optimization gradient estimation black-box adversarial attack',
    url='',
    author='',
    author_email='',
    license='MIT',
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.24.0',
        'mkdocs>=1.5.0',
        'pyyaml>=6.0',
        'jinja2>=3.0.0',
        'tqdm>=4.66.0',
        'httpx>=0.25.0',
    ],
    extras_require={
        'dev': ['pytest>=7.4.0', 'pytest-cov>=4.1.0'],
        'docs': ['mkdocs-material>=9.4.0', 'pymdown-extensions>=10.3'],
    },
    packages=find_packages(exclude=['tests', 'tests.*']),
    entry_points={
        'console_scripts': [
            'prgf = prgf_attack.cli:main',
        ]
    },
    include_package_data=True,
    package_data={
        'prgf_attack': ['templates/*.md'],
    },
)
