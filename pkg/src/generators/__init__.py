"""
Result and Report Generators

Writers and parsers for result CSVs, metadata sidecars and markdown
experiment summaries.
"""
