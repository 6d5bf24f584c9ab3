"""
optim.py:

Adaptive moment estimation over a dictionary of named parameters, updated in place.
"""
import numpy as np


class Adam:
    """
    Adam optimizer with bias corrected first and second moment estimates.
    """

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.__step = 0
        self.__first = {}
        self.__second = {}

    def step(self, parameters, grads):
        """
        Applies one update to every parameter that has a gradient.

        :param parameters: name to array, modified in place
        :param grads: name to gradient array
        """
        self.__step += 1
        first_correction = 1.0 - self.beta1 ** self.__step
        second_correction = 1.0 - self.beta2 ** self.__step
        for name in sorted(grads):
            grad = grads[name]
            first = self.__first.get(name, np.zeros_like(grad))
            second = self.__second.get(name, np.zeros_like(grad))
            first = self.beta1 * first + (1.0 - self.beta1) * grad
            second = self.beta2 * second + (1.0 - self.beta2) * grad * grad
            self.__first[name], self.__second[name] = first, second
            step = (first / first_correction) / (np.sqrt(second / second_correction) + self.epsilon)
            update = self.learning_rate * step
            parameters[name] -= update
