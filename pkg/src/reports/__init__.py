# Reports package
