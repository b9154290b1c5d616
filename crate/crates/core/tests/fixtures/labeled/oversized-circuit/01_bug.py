from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qreg = QuantumRegister(4)
creg = ClassicalRegister(3)
circ = QuantumCircuit(qreg, creg)  # expect: oversized-circuit
for i in range(3):
    circ.h(i)
circ.measure([0, 1, 2], creg)
