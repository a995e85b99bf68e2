"""Tests package for the DMGD simulator"""
