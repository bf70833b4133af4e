#!/usr/bin/env python3
from paracalc.cli import app

app()
