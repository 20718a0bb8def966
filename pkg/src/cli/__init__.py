"""Command-line surface: config files, writers and subcommands"""
