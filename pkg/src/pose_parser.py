"""
Small flag languages of the command line.

  pose:   [rest ,] l_shoulder.z=90deg, r_elbow=(0,-0.5,0)rad
          or the path of a JSON file holding 3*24 axis-angle numbers
  parts:  torso, l_upper_arm | all | none
  modes:  hybrid, sq_only | all
"""
import json
import math
import os

import numpy as np

from pyparsing import (
    CaselessKeyword,
    Group,
    Opt,
    ParseException,
    Regex,
    Suppress,
    delimited_list,
    one_of,
)
from typing import List, Optional

from body_prior import JOINT_INDEX, JOINT_NAMES, NUM_JOINTS, PART_INDEX, PART_NAMES
from errors import DimensionError
from run_config import ABLATION_MODES

RE_RUN_TESTS = False

LPAREN, RPAREN, DOT, EQUALS = map(Suppress, "().=")
ALL, NONE, REST = map(CaselessKeyword, ("all", "none", "rest"))

number = Regex(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?").set_parse_action(lambda toks: float(toks[0]))
number.set_name("number")

###################################################
###################### POSE #######################
###################################################

joint_name = one_of(JOINT_NAMES, as_keyword=True).set_name("joint name")
axis_name = one_of("x y z", as_keyword=True).set_name("axis")
unit = Opt(one_of("deg rad"), default="rad").set_name("unit")

vector = Group(LPAREN + number + Suppress(",") + number + Suppress(",") + number + RPAREN)
vector.set_name("(x, y, z) vector")


def assignment_semantics(s, loc, toks):
    joint, axis, value, angle_unit = toks[0], toks[1], toks[2], toks[3]
    scale = math.pi / 180.0 if angle_unit == "deg" else 1.0
    if not axis:
        if isinstance(value, float):
            raise ParseException(s, loc, f"{joint} needs an axis (.x/.y/.z) for a scalar angle")
        return {"joint": JOINT_INDEX[joint], "axis": None, "value": [v * scale for v in value]}
    if not isinstance(value, float):
        raise ParseException(s, loc, f"{joint}.{axis} takes a single angle")
    return {"joint": JOINT_INDEX[joint], "axis": "xyz".index(axis), "value": value * scale}


assignment = (joint_name
              + Opt(DOT + axis_name, default="")
              + EQUALS
              + (vector.copy().set_parse_action(lambda toks: [tuple(toks[0])]) | number)
              + unit)
assignment.set_parse_action(assignment_semantics)

pose_spec = Opt(REST + Suppress(Opt(",")), default="base") + Opt(delimited_list(assignment))

###################################################
################ PARTS AND MODES ##################
###################################################

part_name = one_of(PART_NAMES, as_keyword=True).set_name("body part")
part_list = (ALL.copy().set_parse_action(lambda: [list(PART_NAMES)])
             | NONE.copy().set_parse_action(lambda: [[]])
             | Group(delimited_list(part_name)))

mode_name = one_of(ABLATION_MODES, as_keyword=True).set_name("ablation mode")
mode_list = ALL.copy().set_parse_action(lambda: [list(ABLATION_MODES)]) | Group(delimited_list(mode_name))


def parse_theta(text: str, base: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Assignments overwrite components of `base` (zeros when missing); a leading
    `rest` starts from zeros regardless. A path to a JSON file (a list, or an
    object with a "theta" list) replaces the pose outright.
    """
    text = text.strip()
    if text.endswith(".json") and os.path.isfile(text):
        with open(text, "r") as ip:
            doc = json.load(ip)
        values = np.asarray(doc["theta"] if isinstance(doc, dict) else doc, dtype=np.float64).reshape(-1)
        if values.size != 3 * NUM_JOINTS:
            raise DimensionError(f"{text}: expected {3 * NUM_JOINTS} pose values, got {values.size}")
        return values

    toks = pose_spec.parse_string(text, parse_all=True)
    start_rest = toks[0] == "rest"
    theta = np.zeros(3 * NUM_JOINTS) if base is None or start_rest else np.array(base, dtype=np.float64)
    for item in toks[1:]:
        j = item["joint"]
        if item["axis"] is None:
            theta[3 * j:3 * j + 3] = item["value"]
        else:
            theta[3 * j + item["axis"]] = item["value"]
    return theta


def parse_parts(text: str) -> List[int]:
    names = part_list.parse_string(text.strip(), parse_all=True)[0]
    return sorted({PART_INDEX[n] for n in names})


def parse_modes(text: str) -> List[str]:
    """Modes in the order given, duplicates dropped."""
    modes = mode_list.parse_string(text.strip(), parse_all=True)[0]
    return list(dict.fromkeys(modes))


if RE_RUN_TESTS:
    pose_spec.run_tests(
        """
        # one component in degrees
        l_shoulder.z=90deg

        # full axis-angle vector
        rest, r_elbow=(0,-0.5,0)rad

        # scalar without an axis
        l_knee=0.3
        """
    )
    print(parse_parts("torso, l_upper_arm"))
    print(parse_modes("all"))
