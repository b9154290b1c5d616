from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(3, 3)
for i in range(3):
    qc.h(i)
for i in range(3):
    qc.measure(i, i)
qc.measure(2, 2)  # expect: double-meas
