# Config package initializer.
