"""Turn a dataclass of defaults into command-line flags."""

import argparse
import dataclasses
import json


def parse_config(cls, argv=None):
    parser = argparse.ArgumentParser(description=cls.__doc__)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        if isinstance(default, bool):
            parser.add_argument(f"--{f.name.replace('_', '-')}", action=argparse.BooleanOptionalAction, default=default)
        elif isinstance(default, (list, tuple)):
            parser.add_argument(f"--{f.name.replace('_', '-')}", type=json.loads, default=default,
                                help="JSON list")
        else:
            parser.add_argument(f"--{f.name.replace('_', '-')}", type=type(default), default=default)
    return cls(**vars(parser.parse_args(argv)))
