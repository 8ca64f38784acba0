# Schemas package initializer.
