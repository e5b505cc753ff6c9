import sys
import traceback
from string import Template

from utils.settings import Settings

SEP_LINE = Settings.line("-", 78)
APP_NAME = "TriAvatar"
WELC_MSG = f"Welcome to {APP_NAME}"
VER_MSG = Template("$app_name Version $ver")
HELP_MSG = "\nRun with \"--help\" to display supported commands."


def splash_screen():
    print(SEP_LINE)
    print(WELC_MSG)
    print(VER_MSG.substitute(app_name=APP_NAME, ver=Settings.get_version()))
    print(Settings.get_copyright())
    print(HELP_MSG)
    print(SEP_LINE)


def print_status(msg: str):
    if Settings.is_verbose():
        print(msg)


def print_warning(msg: str):
    print(f"Warning: {msg}", file=sys.stderr)


def print_error(e: BaseException):
    print(SEP_LINE, file=sys.stderr)
    if Settings.is_debug():
        traceback.print_exception(e.__class__, e, e.__traceback__)
    else:
        print(traceback.format_exception_only(e.__class__, e)[-1].rstrip(), file=sys.stderr)
    print(SEP_LINE, file=sys.stderr)

