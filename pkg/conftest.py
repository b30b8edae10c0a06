# keep pytest to the package tests; examples/ is a read-only reference corpus
collect_ignore = ["examples", "demos"]
