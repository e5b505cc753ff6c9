import sys
import os
sys.path.append(os.path.dirname(os.path.realpath(__file__)))
from tensor import *
from functional import *
from container import *
from optim import *
