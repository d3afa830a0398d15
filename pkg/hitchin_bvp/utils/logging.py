#!/usr/bin/env python3

import os
import sys

_LEVELS = {"debug": 10, "info": 20, "warn": 30, "error": 40, "quiet": 100}


def _fmt_value(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class Log:
    HEADER = "\033[95m"
    OKBLUE = "\033[94m"
    OKGREEN = "\033[92m"
    WARNING = "\033[93m"
    FAIL = "\033[91m"
    DIM = "\033[90m"
    ENDC = "\033[0m"

    level = _LEVELS.get(os.environ.get("HITCHIN_BVP_LOG", "info").lower(), 20)

    @classmethod
    def configure(cls, level=None, quiet=False):
        if quiet:
            cls.level = _LEVELS["quiet"]
        elif level is not None:
            cls.level = _LEVELS.get(str(level).lower(), cls.level)

    @classmethod
    def enabled(cls, level):
        return cls.level <= _LEVELS[level]

    @staticmethod
    def _color(code):
        return "" if os.environ.get("NO_COLOR") else code

    @classmethod
    def _emit(cls, level, tag, code, msg, fields):
        if not cls.enabled(level):
            return
        if fields:
            msg = msg + " " + " ".join(f"{k}={_fmt_value(v)}" for k, v in fields.items())
        stream = sys.stderr if level == "error" else sys.stdout
        print(f"{cls._color(code)}{tag}{cls._color(cls.ENDC)} {msg}", file=stream)

    @classmethod
    def debug(cls, msg, **fields):
        cls._emit("debug", "[DEBUG]", cls.DIM, msg, fields)

    @classmethod
    def info(cls, msg, **fields):
        cls._emit("info", "[INFO]", cls.OKBLUE, msg, fields)

    @classmethod
    def success(cls, msg, **fields):
        cls._emit("info", "[SUCCESS]", cls.OKGREEN, msg, fields)

    @classmethod
    def warn(cls, msg, **fields):
        cls._emit("warn", "[WARN]", cls.WARNING, msg, fields)

    @classmethod
    def error(cls, msg, **fields):
        cls._emit("error", "[ERROR]", cls.FAIL, msg, fields)

    @classmethod
    def header(cls, msg):
        if cls.enabled("info"):
            print(f"{cls._color(cls.HEADER)}[---- {msg} ----]{cls._color(cls.ENDC)}")
