"""Base classifiers producing 26 x N score and emission matrices."""
