# Mesher package initializer.
