class TopicBenchError(Exception):
    """Base class for all errors raised by topicbench."""
