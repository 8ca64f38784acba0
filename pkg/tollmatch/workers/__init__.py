# Workers package initializer.
