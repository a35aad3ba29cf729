"""Generator, planner, validator and evaluation harness for P* blocksworld problems."""
