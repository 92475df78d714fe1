import logging

log = logging.getLogger('mlkp')
