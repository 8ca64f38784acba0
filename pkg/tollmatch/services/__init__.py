# Services package initializer.
