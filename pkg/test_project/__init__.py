__author__ = 'artem'
