# Keeps pytest rooted here so `from helpers import ...` resolves.
