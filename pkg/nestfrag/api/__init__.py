"""nestfrag.api package initializer

Makes the `nestfrag/api` directory a package so modules like
`nestfrag.api.flask` can be imported with standard package imports.
"""
