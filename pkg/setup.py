#! /usr/bin/env python3

from setuptools import setup


long_description = '''
*fracnet* learns coarse time stepping for diffusion in fractured porous media.

A fine two-dimensional simulation with embedded fractures is upscaled with
non-local multicontinuum (NLMC) basis functions: every coarse block gets one
unknown for the matrix and one for each fracture crossing it. Coarse
trajectories of many random source terms are then used to train small
fully-connected networks that replace the coarse time step.

Three surrogates are trained and compared against "observation" data computed
on a slightly different geometry:

 - N_o: trained on observation data only
 - N_m: trained on a mix of simulation and observation data
 - N_s: trained on simulation data only

Networks can see the whole coarse state or only a region of influence around
each output unknown (masked, sparse layers).


Usage
=====

Run from terminal::

  $ fracnet run-example --example 1 --out results
  .  geometry
  .  basis
  .  sources
  -- upscaling-check
  .  simulate
  (...)
  .  report

  $ fracnet help stages

The pipeline can also be run one part at a time
(``gen-geometry``, ``gen-data``, ``train``, ``evaluate``) with a JSON
experiment config file.


license
=======

The MIT License
'''

setup(name = 'fracnet',
      description = 'fracnet - learned coarse time stepping in fractured media',
      version = '0.1.dev0',
      license = 'MIT',
      classifiers = [
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'License :: OSI Approved :: MIT License',
        'Natural Language :: English',
        'Operating System :: OS Independent',
        'Operating System :: POSIX',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering',
        'Topic :: Scientific/Engineering :: Physics',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        ],
      keywords = "multiscale upscaling fractured-media neural-network surrogate",
      packages = ['fracnet'],
      python_requires='>=3.8',
      install_requires = [
          'numpy>=1.20',
          'scipy>=1.7',
          'importlib-metadata>=4.4; python_version<"3.10"',
      ],
      extras_require={
          'toml': ['tomli; python_version<"3.11"'],
          # cloudpickle broken on pypy
          'cloudpickle': ['cloudpickle; platform_python_implementation!="pypy"'],
      },
      long_description = long_description,
      entry_points = {
          'console_scripts': [
              'fracnet = fracnet.__main__:main'
          ]
      },
      )
